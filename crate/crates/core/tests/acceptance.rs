//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Correctness criteria (1-6, 10) abort the run when they fail. The
//! empirical criteria (7, 9) report their measured values and a FAIL line
//! without aborting; criterion 8 needs `ERAS_WN18RR_DIR`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use eras::app::{self, RunConfig};
use eras::controller::{ControllerConfig, PolicyState};
use eras::evaluator::{link_prediction_eval, RankMetrics, Supernet, TieRule};
use eras::grouping::{init_assignments, GroupAssignment};
use eras::kg_store::{
    generate_synthetic, load_dataset, Direction, FamilyPattern,
    RelationFamily, Split, SyntheticSpec, Triple, TripleStore, Vocab,
};
use eras::scorer::{score, EmbeddingTable, GradAccumulator};
use eras::search_engine::{derive, group_purity, reward, search, CandidateMode, SearchConfig};
use eras::search_space::{encode_known, is_exploitative, Architecture, ConstraintScope, KnownModel};
use eras::trainer::{epoch_rng, loss_and_grad, TrainConfig, Trainer};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    id: usize,
    name: &'static str,
    hard: bool,
    run: fn() -> Verdict,
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn map_values(table: &mut EmbeddingTable, f: impl Fn(f64) -> f64) {
    for x in table.entity_matrix_mut() {
        *x = f(*x);
    }
    for x in table.relation_matrix_mut() {
        *x = f(*x);
    }
}

// ---------------------------------------------------------------- 1

fn brute_loss(arch: &Architecture, batch: &[Triple], table: &EmbeddingTable, l2: f64) -> f64 {
    let n_e = table.num_entities();
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut total = 0.0;
    for t in batch {
        for dir in Direction::BOTH {
            let s: Vec<f64> = (0..n_e).map(|e| score(arch, 0, &dir.substitute(t, e), table)).collect();
            let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            total += lse - s[dir.answer(t)];
        }
        total += l2 * (sq(table.entity(t.head)) + sq(table.relation(t.relation)) + sq(table.entity(t.tail)));
    }
    total / batch.len() as f64
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / scale
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (n_e, n_r, eps, l2) = (6, 3, 1e-4, 1e-2);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for blocks in [2usize, 3, 4] {
        // d = 8 is not divisible into three blocks; M = 3 uses d = 9.
        let dim = if blocks == 3 { 9 } else { 8 };
        for _ in 0..8 {
            let tokens = (0..blocks * blocks).map(|_| rng.random_range(0..=2 * blocks as u8)).collect();
            let arch = Architecture::new(1, blocks, tokens).unwrap();
            let mut table = EmbeddingTable::random(n_e, n_r, dim, blocks, &mut rng).unwrap();
            map_values(&mut table, |x| x * 4.0);
            let batch: Vec<Triple> = (0..4)
                .map(|_| Triple::new(rng.random_range(0..n_e), rng.random_range(0..n_r), rng.random_range(0..n_e)))
                .collect();
            let mut acc = GradAccumulator::new(&table);
            loss_and_grad(&arch, &vec![0; n_r], &batch, &table, l2, &mut acc).unwrap();
            for e in 0..n_e {
                for x in 0..dim {
                    let orig = table.entity(e)[x];
                    table.entity_mut(e)[x] = orig + eps;
                    let up = brute_loss(&arch, &batch, &table, l2);
                    table.entity_mut(e)[x] = orig - eps;
                    let down = brute_loss(&arch, &batch, &table, l2);
                    table.entity_mut(e)[x] = orig;
                    worst = worst.max(relative_error(acc.entity_row(e)[x], (up - down) / (2.0 * eps)));
                }
            }
            for r in 0..n_r {
                for x in 0..dim {
                    let orig = table.relation(r)[x];
                    table.relation_mut(r)[x] = orig + eps;
                    let up = brute_loss(&arch, &batch, &table, l2);
                    table.relation_mut(r)[x] = orig - eps;
                    let down = brute_loss(&arch, &batch, &table, l2);
                    table.relation_mut(r)[x] = orig;
                    worst = worst.max(relative_error(acc.relation_row(r)[x], (up - down) / (2.0 * eps)));
                }
            }
            instances += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-5 && instances >= 20 && secs < 10.0,
        format!("max relative error {worst:.2e} over {instances} instances, {secs:.2}s"),
    )
}

// ---------------------------------------------------------------- 2

fn controller_bptt() -> Verdict {
    let start = Instant::now();
    let cfg = ControllerConfig {
        hidden: 4,
        embed: 3,
        init_scale: 0.5,
        ..ControllerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let mut policy = PolicyState::new(4, 3, cfg, &mut rng);
        // Leave the uniform starting point so every parameter matters.
        for x in policy.params_mut() {
            *x += rng.random_range(-0.4..0.4);
        }
        let tokens: Vec<u8> = (0..4).map(|_| rng.random_range(0..3)).collect();
        let trace = policy.teacher_forced(&tokens);
        let analytic = policy.log_prob_gradient(&trace);
        let eps = 1e-5;
        for k in 0..policy.params().len() {
            let orig = policy.params()[k];
            policy.params_mut()[k] = orig + eps;
            let up = policy.teacher_forced(&tokens).log_prob();
            policy.params_mut()[k] = orig - eps;
            let down = policy.teacher_forced(&tokens).log_prob();
            policy.params_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let scale = analytic[k].abs().max(numeric.abs());
            if scale > 1e-9 {
                worst = worst.max((analytic[k] - numeric).abs() / scale);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-4 && secs < 10.0,
        format!("max relative error {worst:.2e} (hidden 4, V = 3), {secs:.2}s"),
    )
}

// ---------------------------------------------------------------- 3

fn expressiveness_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (n_e, n_r, dim, blocks) = (40, 5, 16, 4);
    let table = EmbeddingTable::random(n_e, n_r, dim, blocks, &mut rng).unwrap();
    let distmult = encode_known(KnownModel::DistMult, blocks).unwrap();
    let complex = encode_known(KnownModel::ComplEx, blocks).unwrap();
    let half = dim / 2;
    let as_complex = |v: &[f64]| -> Vec<Complex64> { (0..half).map(|k| Complex64::new(v[k], v[half + k])).collect() };
    let (mut dm_err, mut cx_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let t = Triple::new(rng.random_range(0..n_e), rng.random_range(0..n_r), rng.random_range(0..n_e));
        let (h, r, tl) = (table.entity(t.head), table.relation(t.relation), table.entity(t.tail));
        let direct: f64 = (0..dim).map(|k| h[k] * r[k] * tl[k]).sum();
        let s = score(&distmult, 0, &t, &table);
        dm_err = dm_err.max((s - direct).abs() / direct.abs().max(1e-300));

        let (hc, rc, tc) = (as_complex(h), as_complex(r), as_complex(tl));
        let oracle: f64 = (0..half).map(|k| hc[k] * rc[k] * tc[k].conj()).sum::<Complex64>().re;
        let s = score(&complex, 0, &t, &table);
        cx_err = cx_err.max((s - oracle).abs() / oracle.abs().max(1e-300));
    }
    check(
        dm_err < 1e-12 && cx_err < 1e-10,
        format!("1000 triples: DistMult rel err {dm_err:.1e}, ComplEx rel err {cx_err:.1e}"),
    )
}

// ---------------------------------------------------------------- 4

/// Reference ranks from a sorted candidate list.
fn brute_ranks(arch: &Architecture, group_of: &[usize], table: &EmbeddingTable, store: &TripleStore, tie: TieRule) -> Vec<f64> {
    let mut ranks = Vec::new();
    for t in store.test() {
        for dir in Direction::BOTH {
            let answer = dir.answer(t);
            let target = score(arch, group_of[t.relation], t, table);
            let mut others: Vec<f64> = (0..store.num_entities())
                .filter(|&e| e != answer && !store.contains(&dir.substitute(t, e)))
                .map(|e| score(arch, group_of[t.relation], &dir.substitute(t, e), table))
                .collect();
            others.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let higher = others.iter().take_while(|&&s| s > target).count();
            let tied = others[higher..].iter().take_while(|&&s| s == target).count();
            ranks.push(match tie {
                TieRule::Optimistic => 1.0 + higher as f64,
                TieRule::Mean => 1.0 + higher as f64 + tied as f64 / 2.0,
            });
        }
    }
    ranks
}

fn random_store(rng: &mut ChaCha8Rng, n_e: usize, n_r: usize, n: usize) -> TripleStore {
    let mut entities = Vocab::new();
    for e in 0..n_e {
        entities.intern(&format!("e{e}"));
    }
    let mut relations = Vocab::new();
    for r in 0..n_r {
        relations.intern(&format!("r{r}"));
    }
    let mut seen = HashSet::new();
    let mut all = Vec::new();
    while all.len() < n {
        let t = Triple::new(rng.random_range(0..n_e), rng.random_range(0..n_r), rng.random_range(0..n_e));
        if seen.insert(t) {
            all.push(t);
        }
    }
    let test = all.split_off(n * 8 / 10);
    let valid = test[..test.len() / 2].to_vec();
    TripleStore::from_ids(entities, relations, all, valid, test[test.len() / 2..].to_vec())
}

fn ranking_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut cases = 0;
    for (n_e, quantised) in [(12, false), (30, true), (50, false), (50, true)] {
        let store = random_store(&mut rng, n_e, 3, 4 * n_e);
        let mut table = EmbeddingTable::random(n_e, 3, 8, 2, &mut rng).unwrap();
        if quantised {
            // Coarse values make exact ties frequent.
            map_values(&mut table, |x| (x * 8.0).round() / 2.0);
        }
        let arch = Architecture::new(2, 2, vec![1, 3, 4, 1, 1, 0, 0, 3]).unwrap();
        let group_of = [0, 1, 0];
        let net = Supernet::new(&arch, &group_of, &table);
        for tie in [TieRule::Optimistic, TieRule::Mean] {
            let report = link_prediction_eval(&net, &store, Split::Test, &[], tie);
            let expected = RankMetrics::from_ranks(&brute_ranks(&arch, &group_of, &table, &store, tie));
            let got = report.overall;
            let same = got.count == expected.count
                && got.mrr.to_bits() == expected.mrr.to_bits()
                && got.hit1 == expected.hit1
                && got.hit3 == expected.hit3
                && got.hit10 == expected.hit10;
            if !same {
                return Verdict::Fail(format!("{n_e} entities, {tie:?}: {got:?} vs {expected:?}"));
            }
            cases += 1;
        }
    }
    Verdict::Pass(format!("{cases} store/tie cases identical to brute-force ranking"))
}

// ---------------------------------------------------------------- 5

fn kmeans_objective() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_rise: f64 = 0.0;
    for inst in 0..100 {
        let n_r = rng.random_range(4..30);
        let dim = rng.random_range(1..6);
        let groups = rng.random_range(1..=n_r.min(5));
        let mut points: Vec<f64> = (0..n_r * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut state = init_assignments(&points, dim, groups, inst).unwrap();
        for _ in 0..3 {
            for x in &mut points {
                *x += rng.random_range(-0.3..0.3);
            }
            let history = state.update_assignments(&points).unwrap();
            for w in history.windows(2) {
                worst_rise = worst_rise.max(w[1] - w[0]);
            }
        }
    }
    let hand = [0.0, 0.2, 10.0, 10.4];
    let mut state = GroupAssignment::single(&hand, 1);
    let hand_ok = match init_assignments(&hand, 1, 2, 0) {
        Ok(s) => {
            state = s;
            let a = state.assignment();
            let mut c = state.centroids().to_vec();
            c.sort_by(|x, y| x.partial_cmp(y).unwrap());
            a[0] == a[1] && a[2] == a[3] && a[0] != a[2] && (c[0] - 0.1).abs() < 1e-12 && (c[1] - 10.2).abs() < 1e-12
        }
        Err(_) => false,
    };
    check(
        worst_rise <= 1e-12 && hand_ok,
        format!(
            "largest SSE rise {worst_rise:.1e} over 100 instances; hand example {} {:?}",
            if hand_ok { "reproduced" } else { "WRONG" },
            state.assignment()
        ),
    )
}

// ---------------------------------------------------------------- 6

fn reinforce_convergence() -> Verdict {
    let start = Instant::now();
    let cfg = ControllerConfig {
        learning_rate: 0.05,
        ..ControllerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let payout = [0.2, 0.5, 0.3, 0.9, 0.1];
    let best = 3;
    let mut policy = PolicyState::new(1, payout.len(), cfg, &mut rng);
    let mut reached = None;
    for update in 1..=500 {
        let batch: Vec<_> = (0..4)
            .map(|_| {
                let trace = policy.sample(&mut rng);
                let q = payout[trace.tokens[0] as usize];
                (trace, q)
            })
            .collect();
        policy.reinforce_update(&batch).unwrap();
        let p = policy.step_distributions(&policy.mode())[0][best];
        if p > 0.9 {
            reached = Some(update);
            break;
        }
    }

    // Violators get exactly zero reward whatever the embeddings.
    let store = random_store(&mut rng, 20, 2, 80);
    let table = EmbeddingTable::random(20, 2, 8, 2, &mut rng).unwrap();
    let mut violators = 0;
    let mut zero = true;
    while violators < 50 {
        let tokens = (0..4).map(|_| rng.random_range(0..=4u8)).collect();
        let arch = Architecture::new(1, 2, tokens).unwrap();
        if is_exploitative(&arch, ConstraintScope::PerGroup) {
            continue;
        }
        violators += 1;
        let q = reward(&arch, &[0, 0], &table, &store, store.train(), CandidateMode::Full, ConstraintScope::PerGroup, &mut rng)
            .unwrap();
        zero &= q == 0.0;
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        reached.is_some() && zero && secs < 60.0,
        format!(
            "P(optimal) > 0.9 after {} updates; {violators} violators all rewarded 0: {zero}; {secs:.2}s",
            reached.map_or("no".to_owned(), |u| u.to_string())
        ),
    )
}

// ---------------------------------------------------------------- 7 and 9

const E2E_SEEDS: [u64; 3] = [0, 1, 2];

fn e2e_spec(seed: u64) -> SyntheticSpec {
    let family = |pattern| RelationFamily {
        pattern,
        count: 4,
        facts_per_relation: 500,
        shared_fraction: 1.0,
    };
    SyntheticSpec {
        n_entities: 200,
        families: vec![family(FamilyPattern::Symmetric), family(FamilyPattern::AntiSymmetric)],
        seed,
        clusters: 60,
    }
}

fn e2e_config(groups: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        groups,
        blocks: 2,
        dim: 32,
        epochs: 20,
        derive_samples: 32,
        reward_batch: 256,
        reward_candidates: CandidateMode::Full,
        seed,
        train: TrainConfig {
            batch_size: 128,
            samples: 4,
            learning_rate: 0.2,
            seed,
            ..TrainConfig::default()
        },
        controller: ControllerConfig {
            learning_rate: 0.01,
            entropy_weight: 0.01,
            ..ControllerConfig::default()
        },
        ..SearchConfig::default()
    }
}

struct E2eRun {
    test_mrr: f64,
    purity: f64,
    arch: String,
    search_seconds: f64,
    train_seconds: f64,
}

fn e2e_run(store: &TripleStore, groups: usize, seed: u64) -> E2eRun {
    let cfg = e2e_config(groups, seed);
    let start = Instant::now();
    let outcome = search(store, &cfg, None).unwrap();
    let mut rng = epoch_rng(seed, 1 << 20);
    let derived = derive(&outcome.policy, &outcome.groups, &outcome.table, store, cfg.derive_samples, &cfg, &mut rng).unwrap();
    let search_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let assignment = outcome.groups.assignment().to_vec();
    let mut trainer = Trainer::new(derived.arch.clone(), assignment.clone(), store, cfg.dim, cfg.train).unwrap();
    trainer.run(store).unwrap();
    let train_seconds = start.elapsed().as_secs_f64();

    let net = Supernet::new(&trainer.arch, &assignment, &trainer.best_table);
    let test_mrr = link_prediction_eval(&net, store, Split::Test, &[], TieRule::Mean).overall.mrr;
    let labels: Vec<usize> = (0..store.num_relations())
        .map(|r| usize::from(store.relations().name(r).starts_with("anti")))
        .collect();
    E2eRun {
        test_mrr,
        purity: group_purity(&assignment, &labels),
        arch: derived.arch.to_string(),
        search_seconds,
        train_seconds,
    }
}

fn e2e_runs() -> &'static Vec<(E2eRun, E2eRun)> {
    static RUNS: std::sync::OnceLock<Vec<(E2eRun, E2eRun)>> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| {
        E2E_SEEDS
            .iter()
            .map(|&seed| {
                let store = generate_synthetic(&e2e_spec(seed)).unwrap();
                let single = e2e_run(&store, 1, seed);
                let aware = e2e_run(&store, 2, seed);
                println!(
                    "    seed {seed}: N=1 test MRR {:.4} [{}]  N=2 test MRR {:.4} purity {:.3} [{}]",
                    single.test_mrr, single.arch, aware.test_mrr, aware.purity, aware.arch
                );
                (single, aware)
            })
            .collect()
    })
}

fn relation_aware_end_to_end() -> Verdict {
    let start = Instant::now();
    let runs = e2e_runs();
    let k = runs.len() as f64;
    let purity = runs.iter().map(|(_, a)| a.purity).sum::<f64>() / k;
    let gain = runs.iter().map(|(s, a)| a.test_mrr - s.test_mrr).sum::<f64>() / k;
    let secs = start.elapsed().as_secs_f64();
    check(
        purity >= 0.9 && gain >= 0.03 && secs < 900.0,
        format!(
            "mean purity {purity:.3} (need >= 0.9), mean MRR gain N=2 over N=1 {gain:+.4} (need >= +0.03), {secs:.0}s"
        ),
    )
}

fn search_efficiency() -> Verdict {
    let runs = e2e_runs();
    let ratios: Vec<f64> = runs.iter().map(|(_, a)| a.search_seconds / a.train_seconds).collect();
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    check(
        worst < 3.0,
        format!(
            "search / stand-alone training wall time per seed: {}",
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 8

fn real_data_sanity() -> Verdict {
    let Some(dir) = std::env::var_os("ERAS_WN18RR_DIR") else {
        return Verdict::Skip("set ERAS_WN18RR_DIR to a WN18RR directory to run".into());
    };
    let store = match load_dataset(Path::new(&dir)) {
        Ok(s) => s,
        Err(e) => return Verdict::Fail(format!("cannot load dataset: {e}")),
    };
    let train = TrainConfig {
        batch_size: 512,
        epochs: 300,
        learning_rate: 0.1,
        ..TrainConfig::default()
    };
    let test_mrr = |arch: &Architecture, group_of: &[usize]| {
        let mut t = Trainer::new(arch.clone(), group_of.to_vec(), &store, 64, train).unwrap();
        t.run(&store).unwrap();
        let net = Supernet::new(&t.arch, &t.group_of, &t.best_table);
        link_prediction_eval(&net, &store, Split::Test, &[], TieRule::Mean).overall.mrr
    };
    let n_r = store.num_relations();
    let distmult = test_mrr(&encode_known(KnownModel::DistMult, 4).unwrap(), &vec![0; n_r]);

    let searched = |groups: usize| {
        let cfg = SearchConfig {
            groups,
            blocks: 4,
            dim: 64,
            epochs: 10,
            train,
            ..SearchConfig::default()
        };
        let out = search(&store, &cfg, None).unwrap();
        let mut rng = epoch_rng(cfg.seed, 1 << 20);
        let d = derive(&out.policy, &out.groups, &out.table, &store, cfg.derive_samples, &cfg, &mut rng).unwrap();
        test_mrr(&d.arch, out.groups.assignment())
    };
    let (one, three) = (searched(1), searched(3));
    check(
        distmult >= 0.35 && three >= one,
        format!("DistMult test MRR {distmult:.4} (need >= 0.35); searched N=3 {three:.4} vs N=1 {one:.4}"),
    )
}

// ---------------------------------------------------------------- 10

fn strip_timing(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("seconds"))
        .map(|l| match l.find(" ranks, ") {
            Some(i) => &l[..i],
            None => l,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        if name == "search_log.csv" {
            // First column is wall time.
            let drop_time = |bytes: &[u8]| -> Vec<String> {
                String::from_utf8_lossy(bytes)
                    .lines()
                    .map(|l| l.split_once(',').map_or(l, |(_, rest)| rest).to_owned())
                    .collect()
            };
            if drop_time(&x) != drop_time(&y) {
                return Err(format!("{name:?} differs"));
            }
        } else if name == "config.toml" {
            let same_keys = |bytes: &[u8]| -> Vec<String> {
                String::from_utf8_lossy(bytes)
                    .lines()
                    .filter(|l| !l.starts_with("output ="))
                    .map(str::to_owned)
                    .collect()
            };
            if same_keys(&x) != same_keys(&y) {
                return Err(format!("{name:?} differs"));
            }
        } else if name.to_string_lossy().ends_with(".txt") || name == "metrics.toml" {
            if strip_timing(&String::from_utf8_lossy(&x)) != strip_timing(&String::from_utf8_lossy(&y)) {
                return Err(format!("{name:?} differs"));
            }
        } else if x != y {
            return Err(format!("{name:?} differs"));
        }
    }
    Ok(names.len())
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let base = |out: &str| {
        let text = format!(
            r#"
dim = 8
blocks = 2
epochs = 6
eval_every = 2
groups = 2
search_epochs = 3
pretrain_epochs = 2
derive_samples = 4
reward_candidates = 30
classify = true
seed = 11
output = "{}"

[synthetic]
n_entities = 60
seed = 3
families = [
  {{ pattern = "symmetric", count = 2, facts_per_relation = 60 }},
  {{ pattern = "anti-symmetric", count = 2, facts_per_relation = 60 }},
  {{ pattern = "inverse-pair", count = 1, facts_per_relation = 60 }},
]
"#,
            tmp.path().join(out).display()
        );
        RunConfig::from_toml_str(&text).unwrap()
    };
    let mut compared = 0;
    let mut run = |label: &str, f: &dyn Fn(&RunConfig) -> eras::Result<()>| -> Result<(), String> {
        let (a, b) = (base(&format!("{label}_a")), base(&format!("{label}_b")));
        f(&a).map_err(|e| e.to_string())?;
        f(&b).map_err(|e| e.to_string())?;
        compared += compare_dirs(&a.output, &b.output)?;
        Ok(())
    };
    let result = (|| {
        run("search", &|c| app::cmd_search(c).map(drop))?;
        run("train", &|c| app::cmd_train(c, Some("SimplE"), None).map(drop))?;
        run("synth", &|c| app::cmd_synth(c).map(drop))?;
        run("patterns", &|c| app::cmd_patterns(c).map(drop))?;
        let ck = tmp.path().join("search_a");
        let (x, cx) = app::cmd_eval(&base("search_a"), &ck, Split::Test).map_err(|e| e.to_string())?;
        let (y, cy) = app::cmd_eval(&base("search_a"), &ck, Split::Test).map_err(|e| e.to_string())?;
        if x.per_relation != y.per_relation || x.overall != y.overall || cx != cy {
            return Err("eval reports differ".into());
        }
        Ok(())
    })();
    match result {
        Ok(()) => Verdict::Pass(format!(
            "search, train, eval, synth and patterns repeated bit-exactly ({compared} artifacts compared)"
        )),
        Err(e) => Verdict::Fail(e),
    }
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "gradient correctness", hard: true, run: gradient_correctness },
        Criterion { id: 2, name: "controller BPTT", hard: true, run: controller_bptt },
        Criterion { id: 3, name: "expressiveness oracles", hard: true, run: expressiveness_oracles },
        Criterion { id: 4, name: "ranking oracle", hard: true, run: ranking_oracle },
        Criterion { id: 5, name: "k-means objective", hard: true, run: kmeans_objective },
        Criterion { id: 6, name: "REINFORCE convergence", hard: true, run: reinforce_convergence },
        Criterion { id: 7, name: "relation-aware end to end", hard: false, run: relation_aware_end_to_end },
        Criterion { id: 8, name: "real-data sanity", hard: false, run: real_data_sanity },
        Criterion { id: 9, name: "search efficiency", hard: false, run: search_efficiency },
        Criterion { id: 10, name: "determinism", hard: true, run: determinism },
    ];
    let filter: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut hard_failures = Vec::new();
    let mut failures = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let verdict = (c.run)();
        let (tag, detail) = match &verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => ("FAIL", d),
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {:>2} {}: {detail}", c.id, c.name);
        if matches!(verdict, Verdict::Fail(_)) {
            failures += 1;
            if c.hard {
                hard_failures.push(c.id);
            }
        }
    }
    println!("acceptance: {failures} failing criteria");
    if !hard_failures.is_empty() {
        eprintln!("correctness criteria failed: {hard_failures:?}");
        std::process::exit(1);
    }
}
