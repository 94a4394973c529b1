//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viewmask::attention::{forward, grad_check, random_inputs, ToyEncoder, ToyEncoderConfig};
use viewmask::backslice::{all_masks, backslice, render_line_mask};
use viewmask::codeviews::{
    build_cfg, build_dfg, build_view, compute_rda, naive_reaching_definitions, CodeViewGraph,
    DfgOptions, Edge, EdgeKind, GraphNode, ViewTag,
};
use viewmask::corpus::{RunManifest, MANIFEST_FILE, MASK_DIR};
use viewmask::maskgen::{apply_mask_limit, attention_gen, AttentionMask, LayerStrategy};
use viewmask::metrics::{classification_metrics, mrr, QueryRanking};
use viewmask::syntax::{default_holders, parse, CodeSnippet, Language};

const HIGHLIGHT: &str = include_str!("../../core/tests/fixtures/highlight.java");
const ADJACENT_FOR: &str = include_str!("../../core/tests/fixtures/adjacent_for.java");
const ADJACENT_FOR_EDGES: &str = include_str!("../../core/tests/fixtures/adjacent_for.edges");
const LAST_DEF: &str = include_str!("../../core/tests/fixtures/last_def.java");

/// Control-flow shapes beyond the three file fixtures.
const CFG_FIXTURES: &[(&str, &str)] = &[
    ("while", "void f(int n) {\nint s = 0;\nwhile (n > 0) {\ns += n;\nn--;\n}\nuse(s);\n}"),
    ("do-while", "void f(int n) {\nint s = 1;\ndo {\ns = s * 2;\nn = n - 1;\n} while (n > 0);\nuse(s);\n}"),
    (
        "switch",
        "void f(int k) {\nint r = 0;\nswitch (k) {\ncase 1:\nr = 1;\ncase 2:\nr += 2;\nbreak;\ndefault:\nr = k;\n}\nuse(r);\n}",
    ),
    (
        "try",
        "void f() {\nint a = 0;\ntry {\na = read();\nuse(a);\n} catch (Exception e) {\na = -1;\n} finally {\nclose(a);\n}\nuse(a);\n}",
    ),
    (
        "labeled",
        "void f(int n) {\nint c = 0;\nouter:\nfor (int i = 0; i < n; i++) {\nfor (int j = 0; j < i; j++) {\nif (j == 3) continue outer;\nc += j;\n}\n}\nuse(c);\n}",
    ),
    ("nested-if", "void f(int x) {\nint y = 0;\nif (x > 0) {\nif (x > 5) {\ny = 2;\n} else {\ny = 1;\n}\n}\nreturn;\n}"),
    ("early-return", "int f(int x) {\nif (x < 0) {\nreturn -x;\n}\nint y = x * 2;\nreturn y;\n}"),
    ("enhanced-for", "void f(int[] xs) {\nint t = 0;\nfor (int x : xs) {\nt += x;\n}\nuse(t);\n}"),
];

// ---------------------------------------------------------------------------
// random snippets

const VARS: &[&str] = &["a", "b", "c", "d"];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn gen_expr(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..3) {
        0 => pick(rng, VARS).to_string(),
        1 => rng.gen_range(0..9).to_string(),
        _ => format!(
            "{} {} {}",
            pick(rng, VARS),
            pick(rng, &["+", "-", "*"]),
            pick(rng, VARS)
        ),
    }
}

fn gen_stmt(rng: &mut ChaCha8Rng, depth: usize) -> String {
    let compound = depth > 0 && rng.gen_bool(0.35);
    if !compound {
        let v = pick(rng, VARS);
        return match rng.gen_range(0..5) {
            0 => format!("int {v} = {};", gen_expr(rng)),
            1 => format!("{v} = {};", gen_expr(rng)),
            2 => format!("{v} += {};", gen_expr(rng)),
            3 => format!("{v}++;"),
            _ => format!("use({});", gen_expr(rng)),
        };
    }
    let body = |rng: &mut ChaCha8Rng| {
        let k = rng.gen_range(1..3);
        (0..k)
            .map(|_| gen_stmt(rng, depth - 1))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let v = pick(rng, VARS);
    match rng.gen_range(0..5) {
        0 => format!("if ({v} > 0) {{\n{}\n}}", body(rng)),
        1 => format!(
            "if ({v} > 1) {{\n{}\n}} else {{\n{}\n}}",
            body(rng),
            body(rng)
        ),
        2 => format!("while ({v} < 9) {{\n{}\n}}", body(rng)),
        3 => format!("for (int i = 0; i < {v}; i++) {{\n{}\n}}", body(rng)),
        _ => format!("do {{\n{}\n}} while ({v} > 2);", body(rng)),
    }
}

fn gen_snippet(rng: &mut ChaCha8Rng, max_stmts: usize, depth: usize) -> String {
    let k = rng.gen_range(1..=max_stmts);
    let body: Vec<String> = (0..k).map(|_| gen_stmt(rng, depth)).collect();
    if rng.gen_bool(0.5) {
        format!("void f(int a, int b) {{\n{}\n}}", body.join("\n"))
    } else {
        body.join("\n")
    }
}

fn java(src: &str) -> CodeSnippet {
    parse(src, Language::Java).expect("fixture parses")
}

fn statement_on_line(s: &CodeSnippet, line: usize) -> usize {
    s.statements()
        .iter()
        .find(|st| st.start_line == line)
        .expect("statement on line")
        .id
}

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// criteria

fn highlight_masks() -> Outcome {
    let s = java(HIGHLIGHT);
    let seed = statement_on_line(&s, 7);
    let holders = default_holders(Language::Java);
    for (views, expected) in [
        (vec![ViewTag::Dfg], vec![2, 7]),
        (vec![ViewTag::Ast], vec![6, 7, 8]),
        (vec![ViewTag::Ast, ViewTag::Dfg], vec![2, 5, 6, 7, 8]),
    ] {
        let view = build_view(&s, &views.iter().copied().collect(), DfgOptions::default())
            .map_err(|e| e.to_string())?;
        let mask = backslice(seed, &view, &holders).map_err(|e| e.to_string())?;
        let lines: Vec<usize> = render_line_mask(&mask, &s).into_iter().collect();
        ensure(lines == expected, || {
            format!("{views:?}: got {lines:?}, want {expected:?}")
        })?;
    }
    Ok("DFG {2,7}, AST {6,7,8}, AST+DFG {2,5,6,7,8}".into())
}

fn line_edges(src: &str, opts: DfgOptions) -> BTreeSet<(usize, usize, EdgeKind)> {
    let s = java(src);
    let cfg = build_cfg(&s);
    let dfg = build_dfg(&s, &cfg, &compute_rda(&s, &cfg), opts);
    let line = |id: usize| s.node(id).unwrap().start_line;
    cfg.edges()
        .iter()
        .chain(dfg.edges())
        .map(|e| (line(e.src), line(e.dst), e.kind))
        .collect()
}

fn loop_fixture_edges() -> Outcome {
    let got = line_edges(ADJACENT_FOR, DfgOptions::default());
    ensure(got.contains(&(8, 5, EdgeKind::Dfg)), || {
        "missing DFG edge 8 -> 5".into()
    })?;
    let expected: BTreeSet<(usize, usize, EdgeKind)> = ADJACENT_FOR_EDGES
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let kind = serde_json::from_value(serde_json::Value::String(f[2].into())).unwrap();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), kind)
        })
        .collect();
    let missing: Vec<_> = expected.difference(&got).collect();
    let extra: Vec<_> = got.difference(&expected).collect();
    ensure(missing.is_empty() && extra.is_empty(), || {
        format!("missing {missing:?}, extra {extra:?}")
    })?;
    Ok(format!(
        "8 -> 5 present; {} CFG+DFG edges match",
        expected.len()
    ))
}

fn last_def_use_edges() -> Outcome {
    let got = line_edges(
        LAST_DEF,
        DfgOptions {
            last_def: true,
            last_use: true,
        },
    );
    ensure(got.contains(&(3, 4, EdgeKind::LastUse)), || {
        "missing LAST_USE 3 -> 4".into()
    })?;
    ensure(got.contains(&(5, 9, EdgeKind::LastDef)), || {
        "missing LAST_DEF 5 -> 9".into()
    })?;
    Ok("LAST_USE 3 -> 4, LAST_DEF 5 -> 9".into())
}

fn token_mask_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let holders = default_holders(Language::Java);
    let view_sets = [
        vec![ViewTag::Ast],
        vec![ViewTag::Cfg],
        vec![ViewTag::Dfg],
        vec![ViewTag::Ast, ViewTag::Dfg],
        vec![ViewTag::Ast, ViewTag::Cfg, ViewTag::Dfg],
    ];
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 60 {
        attempts += 1;
        ensure(attempts < 10_000, || {
            "could not generate enough small snippets".into()
        })?;
        let src = gen_snippet(&mut rng, 3, 1);
        let s = java(&src);
        if s.tokens().len() > 30 {
            continue;
        }
        let views = &view_sets[checked % view_sets.len()];
        let view = build_view(&s, &views.iter().copied().collect(), DfgOptions::default())
            .map_err(|e| e.to_string())?;
        let masks = all_masks(&s, &view, &holders).map_err(|e| e.to_string())?;
        let a = attention_gen(&s, &masks).map_err(|e| e.to_string())?;
        let owner: Vec<Option<usize>> = s.tokens().iter().map(|t| t.owner_statement).collect();
        let n = owner.len();
        for i in 0..n {
            for j in 0..n {
                let want = match (owner[i], owner[j]) {
                    (Some(si), Some(sj)) => i == j || masks[si].members.contains(&sj),
                    _ => true,
                };
                ensure(a.allowed(i, j) == want, || {
                    format!("({i},{j}) differs on:\n{src}")
                })?;
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} random snippets (<= 30 tokens), exact"))
}

fn rda_oracle() -> Outcome {
    let mut sources: Vec<(String, String)> = vec![
        ("highlight".into(), HIGHLIGHT.into()),
        ("loop".into(), ADJACENT_FOR.into()),
        ("last-def".into(), LAST_DEF.into()),
    ];
    sources.extend(
        CFG_FIXTURES
            .iter()
            .map(|(n, s)| (n.to_string(), s.to_string())),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEF);
    while sources.len() < 200 {
        let src = gen_snippet(&mut rng, 5, 2);
        if java(&src).statement_count() <= 12 {
            sources.push((format!("random-{}", sources.len()), src));
        }
    }
    for (name, src) in &sources {
        let s = java(src);
        ensure(s.statement_count() <= 12, || {
            format!("{name} has more than 12 statements")
        })?;
        let cfg = build_cfg(&s);
        let facts = compute_rda(&s, &cfg);
        let (reach_in, reach_out) = naive_reaching_definitions(&facts, &cfg);
        ensure(
            facts.reach_in == reach_in && facts.reach_out == reach_out,
            || format!("{name}: sets differ"),
        )?;
    }
    Ok(format!(
        "{} CFG fixtures, exact set equality",
        sources.len()
    ))
}

fn brute_force_slice(
    g: &CodeViewGraph,
    seed: usize,
    is_holder: &dyn Fn(usize) -> bool,
) -> BTreeSet<usize> {
    let n = g.nodes().len();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for e in g.edges() {
        reach[e.src][e.dst] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .filter(|&p| !is_holder(p) && reach[p][seed])
        .collect()
}

fn backslice_oracle() -> Outcome {
    let holders = default_holders(Language::Java);
    let mut graphs: Vec<CodeViewGraph> = Vec::new();
    let mut sources: Vec<&str> = vec![HIGHLIGHT, ADJACENT_FOR, LAST_DEF];
    sources.extend(CFG_FIXTURES.iter().map(|(_, s)| *s));
    let opts = DfgOptions {
        last_def: true,
        last_use: true,
    };
    for src in sources {
        let s = java(src);
        if s.node_count() > 15 {
            continue;
        }
        for views in [
            vec![ViewTag::Ast],
            vec![ViewTag::Cfg],
            vec![ViewTag::Dfg],
            vec![ViewTag::Ast, ViewTag::Dfg],
            vec![ViewTag::Ast, ViewTag::Cfg, ViewTag::Dfg],
        ] {
            graphs.push(
                build_view(&s, &views.into_iter().collect(), opts).map_err(|e| e.to_string())?,
            );
        }
    }
    let from_snippets = graphs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB5);
    for _ in 0..300 {
        let n = rng.gen_range(2..=15);
        let nodes = (0..n)
            .map(|id| GraphNode {
                id,
                kind: if rng.gen_bool(0.25) {
                    "block"
                } else {
                    "expression_statement"
                }
                .into(),
                start_line: id + 1,
                end_line: id + 1,
            })
            .collect();
        let m = rng.gen_range(0..3 * n);
        let edges: Vec<Edge> = (0..m)
            .map(|_| Edge::new(rng.gen_range(0..n), rng.gen_range(0..n), EdgeKind::Cfg))
            .collect();
        graphs.push(
            CodeViewGraph::from_parts(nodes, edges, [ViewTag::Cfg]).map_err(|e| e.to_string())?,
        );
    }
    for g in &graphs {
        ensure(g.nodes().len() <= 15, || {
            "graph fixture exceeds 15 nodes".into()
        })?;
        let is_holder = |id: usize| holders.contains(&g.node(id).unwrap().kind);
        for seed in (0..g.nodes().len()).filter(|&id| !is_holder(id)) {
            let got = backslice(seed, g, &holders)
                .map_err(|e| e.to_string())?
                .members;
            let want = brute_force_slice(g, seed, &is_holder);
            ensure(got == want, || {
                format!("seed {seed}: got {got:?}, want {want:?}")
            })?;
        }
    }
    Ok(format!(
        "{} graphs ({from_snippets} from snippets), all seeds",
        graphs.len()
    ))
}

fn mask_limit_rule() -> Outcome {
    // twenty tokens, diagonal only: 1 - 20/400 = 0.95
    let sparse = AttentionMask::from_fn(20, |_, _| false);
    ensure((sparse.masked_fraction() - 0.95).abs() < 1e-12, || {
        "fixture is not 95% masked".into()
    })?;
    let out = apply_mask_limit(&sparse, 0.90);
    ensure(out.is_fallback() && out.is_all_ones(), || {
        "0.95 > 0.90 did not fall back".into()
    })?;

    let half = AttentionMask::from_fn(4, |i, j| (i < 2) == (j < 2));
    for limit in [0.5, 0.7, 0.8, 0.9] {
        let out = apply_mask_limit(&half, limit);
        ensure(out == half && !out.is_fallback(), || {
            format!("limit {limit} changed a 0.5-masked input")
        })?;
    }
    let ones = AttentionMask::all_ones(6);
    ensure(apply_mask_limit(&ones, 0.7) == ones, || {
        "all-ones changed".into()
    })?;
    Ok("0.95 @ 0.90 -> all-ones fallback; <= limit unchanged".into())
}

fn attention_checks() -> Outcome {
    let block =
        |n: usize, split: usize| AttentionMask::from_fn(n, |i, j| (i < split) == (j < split));
    let cfg = |layers, strategy| ToyEncoderConfig {
        layers,
        model_dim: 8,
        layer_strategy: strategy,
        seed: 11,
        post_softmax_hadamard: false,
    };
    let err = |e: viewmask::Error| e.to_string();

    let x = random_inputs(7, 8, 1);
    let mask = block(7, 3);
    let (_, trace) = forward(&x, &mask, &cfg(3, LayerStrategy::All)).map_err(err)?;
    let mut worst_masked: f64 = 0.0;
    let mut worst_row: f64 = 0.0;
    for a in &trace.attention {
        for i in 0..7 {
            worst_row = worst_row.max((a.row(i).sum() - 1.0).abs());
            for j in 0..7 {
                if !mask.allowed(i, j) {
                    worst_masked = worst_masked.max(a[(i, j)]);
                }
            }
        }
    }
    ensure(worst_masked < 1e-12, || {
        format!("masked weight {worst_masked:e}")
    })?;
    ensure(worst_row < 1e-9, || format!("row sum error {worst_row:e}"))?;

    let enc = ToyEncoder::new(&cfg(3, LayerStrategy::All)).map_err(err)?;
    let (with_ones, _) = enc
        .forward(&x, Some(&AttentionMask::all_ones(7)))
        .map_err(err)?;
    let (plain, _) = enc.forward(&x, None).map_err(err)?;
    ensure(with_ones == plain, || {
        "all-ones mask changed outputs".into()
    })?;

    let mut perturbed = x.clone();
    let noise = random_inputs(7, 8, 2);
    for i in 3..7 {
        for j in 0..8 {
            perturbed[(i, j)] += 5.0 * noise[(i, j)];
        }
    }
    let (a, _) = enc.forward(&x, Some(&mask)).map_err(err)?;
    let (b, _) = enc.forward(&perturbed, Some(&mask)).map_err(err)?;
    let mut leak: f64 = 0.0;
    for i in 0..3 {
        for j in 0..8 {
            leak = leak.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    ensure(leak < 1e-10, || format!("block isolation leak {leak:e}"))?;

    let mut worst_grad: f64 = 0.0;
    for (n, strategy) in [
        (5, LayerStrategy::All),
        (6, LayerStrategy::Alternate),
        (1, LayerStrategy::All),
    ] {
        let e = grad_check(&random_inputs(n, 8, 3), &block(n, n / 2), &cfg(3, strategy))
            .map_err(err)?;
        worst_grad = worst_grad.max(e);
    }
    ensure(worst_grad < 1e-4, || {
        format!("gradient relative error {worst_grad:e}")
    })?;
    Ok(format!(
        "masked {worst_masked:.1e}, row sums {worst_row:.1e}, neutral exact, leak {leak:.1e}, grad {worst_grad:.1e}"
    ))
}

fn metric_values() -> Outcome {
    let ranks: Vec<QueryRanking> = [1, 2, 4]
        .iter()
        .enumerate()
        .map(|(i, &rank)| QueryRanking {
            query_id: format!("q{i}"),
            rank,
        })
        .collect();
    let m = mrr(&ranks).map_err(|e| e.to_string())?;
    ensure((m - 0.583_333_333_333_333_3).abs() < 1e-12, || {
        format!("MRR {m}")
    })?;
    let r = classification_metrics(&[0, 0, 0, 0, 0, 0], &[0, 1, 0, 1, 0, 1], 2)
        .map_err(|e| e.to_string())?;
    ensure((r.macro_f1 - 1.0 / 3.0).abs() < 1e-12, || {
        format!("macro-F1 {}", r.macro_f1)
    })?;
    Ok(format!("MRR {m:.12}, macro-F1 {:.12}", r.macro_f1))
}

fn corpus_line(rng: &mut ChaCha8Rng, k: usize) -> String {
    let code = match k % 25 {
        // mostly-masked record that should fall back
        7 => (0..20).map(|i| format!("int v{i} = {i};\n")).collect(),
        // recoverable syntax error
        13 => "void f() {\nint x = ;\nuse(x);\n}".to_string(),
        _ => gen_snippet(rng, 8, 2),
    };
    serde_json::json!({ "id": format!("rec-{k:03}"), "code": code, "docstring": "generated" })
        .to_string()
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_viewmask"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "viewmask {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = vec![(
        MANIFEST_FILE.to_string(),
        fs::read(dir.join(MANIFEST_FILE)).unwrap_or_default(),
    )];
    let mut masks: Vec<_> = fs::read_dir(dir.join(MASK_DIR))
        .map(|rd| rd.map(|e| e.unwrap().path()).collect())
        .unwrap_or_default();
    masks.sort();
    for p in masks {
        files.push((
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).unwrap(),
        ));
    }
    files
}

fn pipeline_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
    let lines: Vec<String> = (0..100).map(|k| corpus_line(&mut rng, k)).collect();
    let clean = tmp.path().join("clean.jsonl");
    fs::write(&clean, lines.join("\n") + "\n").map_err(|e| e.to_string())?;

    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run_cli(&[
            "batch",
            clean.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--views",
            "ast,dfg",
            "--last-def",
            "--last-use",
        ])?;
    }
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    ensure(ta.len() == 201, || {
        format!("expected 200 mask files + manifest, found {}", ta.len())
    })?;
    ensure(ta == tb, || "two runs differ".into())?;

    let manifest = |dir: &Path| -> Result<RunManifest, String> {
        serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())
    };
    let base = manifest(&a)?;
    ensure(base.record_count == 100, || {
        "manifest does not cover every record".into()
    })?;

    let mut dirty_lines = lines.clone();
    dirty_lines[42] = "{\"id\": \"rec-042\", \"code\": \"int broken".to_string();
    let dirty = tmp.path().join("dirty.jsonl");
    fs::write(&dirty, dirty_lines.join("\n") + "\n").map_err(|e| e.to_string())?;
    let c = tmp.path().join("c");
    run_cli(&[
        "batch",
        dirty.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--views",
        "ast,dfg",
        "--last-def",
        "--last-use",
    ])?;
    let injected = manifest(&c)?;
    ensure(injected.record_count == 100, || {
        "record count changed".into()
    })?;
    let mut flipped = Vec::new();
    for (x, y) in base.records.iter().zip(&injected.records) {
        if x.status != y.status {
            flipped.push(y.id.clone());
        }
    }
    ensure(flipped == vec!["line-43".to_string()], || {
        format!("statuses flipped: {flipped:?}")
    })?;
    for r in base.records.iter().filter(|r| r.id != "rec-042") {
        for ext in ["mask", "json"] {
            let name = format!("{}.{ext}", r.file_stem.as_deref().unwrap_or(&r.id));
            let same = fs::read(a.join(MASK_DIR).join(&name)).ok()
                == fs::read(c.join(MASK_DIR).join(&name)).ok();
            ensure(same, || format!("{name} changed after injection"))?;
        }
    }
    let counts = &base.status_counts;
    Ok(format!(
        "100 records, bit-identical reruns, isolation holds; statuses {counts:?}"
    ))
}

fn main() {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: &[Criterion] = &[
        (
            "highlight fixture masks",
            Duration::from_secs(1),
            highlight_masks,
        ),
        (
            "loop fixture edges",
            Duration::from_secs(5),
            loop_fixture_edges,
        ),
        (
            "last-def/last-use fixture",
            Duration::from_secs(5),
            last_def_use_edges,
        ),
        ("token mask oracle", Duration::from_secs(10), token_mask_oracle),
        (
            "reaching-definitions oracle",
            Duration::from_secs(30),
            rda_oracle,
        ),
        (
            "backward-slice oracle",
            Duration::from_secs(30),
            backslice_oracle,
        ),
        (
            "masking-limit rule",
            Duration::from_secs(5),
            mask_limit_rule,
        ),
        (
            "reference attention",
            Duration::from_secs(5),
            attention_checks,
        ),
        ("metrics", Duration::from_secs(5), metric_values),
        (
            "pipeline determinism",
            Duration::from_secs(60),
            pipeline_determinism,
        ),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if took > *limit {
                Err(format!("took {took:.2?}, limit {limit:?}"))
            } else {
                Ok(detail)
            }
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<28} [{took:>9.2?}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<28} [{took:>9.2?}] {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
