//! Brute-force metric formulas, written out loop by loop, plus a random
//! instance generator for comparing them against the library.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqbench::dataset::{ItemStats, ItemStatsTable};
use seqbench::extraction::validate_ids;
use seqbench::metrics::{
    arr_at_k, evaluate, ndcg_at_k, recall_at_k, user_arp, user_arq, user_arqv, EvalConfig, PerUserObservation,
    TimingLog,
};

#[derive(Debug, Clone)]
pub struct Instance {
    pub k: usize,
    pub universe: u32,
    /// (user_id, ground truth, runs)
    pub users: Vec<(u32, u32, Vec<Vec<u32>>)>,
    pub popularity: HashMap<u32, u64>,
    pub quality: HashMap<u32, f64>,
    pub timings: Vec<f64>,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let k = rng.random_range(1..=10usize);
    let universe = rng.random_range(k as u32..=k as u32 + 25);
    let n_users = rng.random_range(1..=20u32);
    let mut users = Vec::new();
    let mut ids: Vec<u32> = (1..=60).collect();
    // shuffle user ids so the input order differs from id order
    for i in (1..ids.len()).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    for &user in ids.iter().take(n_users as usize) {
        let t = rng.random_range(1..=5usize);
        let gt = rng.random_range(1..=universe);
        let mut runs = Vec::new();
        for _ in 0..t {
            let len = rng.random_range(1..=k);
            let mut list = Vec::new();
            while list.len() < len {
                let item = rng.random_range(1..=universe);
                if !list.contains(&item) {
                    list.push(item);
                }
            }
            runs.push(list);
        }
        users.push((user, gt, runs));
    }
    let mut popularity = HashMap::new();
    let mut quality = HashMap::new();
    for item in 1..=universe {
        if rng.random_bool(0.9) {
            popularity.insert(item, rng.random_range(0..500u64));
        }
        if rng.random_bool(0.8) {
            quality.insert(item, rng.random_range(1.0..=5.0f64));
        }
    }
    let timings = (0..rng.random_range(1..=30))
        .map(|_| rng.random_range(0.0..20.0f64))
        .collect();
    Instance {
        k,
        universe,
        users,
        popularity,
        quality,
        timings,
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn avg(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        let mut s = 0.0;
        for x in xs {
            s += x;
        }
        Some(s / xs.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserValues {
    pub recall: f64,
    pub ndcg: f64,
    pub arp: f64,
    pub arq: Option<f64>,
    pub arqv: Option<f64>,
    pub arr: f64,
}

pub fn user_values(inst: &Instance, gt: u32, runs: &[Vec<u32>]) -> UserValues {
    let k = inst.k;
    let mut hits = Vec::new();
    let mut gains = Vec::new();
    let mut pops = Vec::new();
    let mut quals = Vec::new();
    let mut vars = Vec::new();
    for run in runs {
        let top: Vec<u32> = run.iter().take(k).copied().collect();

        let mut hit = 0.0;
        let mut dcg = 0.0;
        for (j, &item) in top.iter().enumerate() {
            if item == gt {
                hit = 1.0;
                dcg += 1.0 / ((j + 2) as f64).log2();
            }
        }
        let idcg = 1.0 / 2f64.log2();
        hits.push(hit);
        gains.push(dcg / idcg);

        let mut p = 0.0;
        for item in &top {
            p += *inst.popularity.get(item).unwrap_or(&0) as f64;
        }
        pops.push(p / top.len() as f64);

        let qs: Vec<f64> = top.iter().filter_map(|i| inst.quality.get(i).copied()).collect();
        if let Some(mu) = avg(&qs) {
            quals.push(mu);
            let mut v = 0.0;
            for q in &qs {
                v += (q - mu).powi(2);
            }
            vars.push(v / qs.len() as f64);
        }
    }

    let t = runs.len();
    let arr = if t == 1 {
        1.0
    } else {
        let mut rep = 0usize;
        for n in 0..t {
            for item in runs[n].iter().take(k) {
                let mut elsewhere = false;
                for (m, other) in runs.iter().enumerate() {
                    if m != n && other.iter().take(k).any(|x| x == item) {
                        elsewhere = true;
                    }
                }
                if elsewhere {
                    rep += 1;
                }
            }
        }
        rep as f64 / (t * k) as f64
    };

    UserValues {
        recall: avg(&hits).unwrap(),
        ndcg: avg(&gains).unwrap(),
        arp: avg(&pops).unwrap(),
        arq: avg(&quals),
        arqv: avg(&vars),
        arr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub recall: f64,
    pub ndcg: f64,
    pub arp: f64,
    pub arq: f64,
    pub arqv: f64,
    pub arr: f64,
    pub art: f64,
}

pub fn aggregate(inst: &Instance) -> Aggregate {
    let mut users = inst.users.clone();
    users.sort_by_key(|u| u.0);
    let per: Vec<UserValues> = users.iter().map(|(_, gt, runs)| user_values(inst, *gt, runs)).collect();
    let col = |f: &dyn Fn(&UserValues) -> Option<f64>| {
        let v: Vec<f64> = per.iter().filter_map(f).collect();
        avg(&v).unwrap_or(0.0)
    };
    Aggregate {
        recall: col(&|u| Some(u.recall)),
        ndcg: col(&|u| Some(u.ndcg)),
        arp: col(&|u| Some(u.arp)),
        arq: col(&|u| u.arq),
        arqv: col(&|u| u.arqv),
        arr: col(&|u| Some(u.arr)),
        art: avg(&inst.timings).unwrap_or(0.0),
    }
}

// Library side of the comparison.

const TOL: f64 = 1e-9;

pub fn observations(inst: &Instance) -> Vec<PerUserObservation> {
    inst.users
        .iter()
        .map(|(user, gt, runs)| PerUserObservation {
            user_id: *user,
            ground_truth: *gt,
            runs: runs
                .iter()
                .enumerate()
                .map(|(r, list)| {
                    validate_ids(
                        list.iter().map(|&i| u64::from(i)),
                        inst.universe,
                        inst.k,
                        *user,
                        r as u32 + 1,
                    )
                })
                .collect(),
        })
        .collect()
}

pub fn stats(inst: &Instance) -> ItemStatsTable {
    (1..=inst.universe)
        .map(|item_id| ItemStats {
            item_id,
            popularity: inst.popularity.get(&item_id).copied().unwrap_or(0),
            quality: inst.quality.get(&item_id).copied(),
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    }
}

/// Checks one instance, returning a description of the first mismatch.
pub fn check(inst: &Instance) -> Result<(), String> {
    let obs = observations(inst);
    let st = stats(inst);
    let k = inst.k;

    for (o, (_, gt, runs)) in obs.iter().zip(&inst.users) {
        let want = user_values(inst, *gt, runs);
        let got = [
            ("recall", recall_at_k(o, k), Some(want.recall)),
            ("ndcg", ndcg_at_k(o, k), Some(want.ndcg)),
            ("arp", user_arp(o, &st, k), Some(want.arp)),
            ("arq", user_arq(o, &st, k), want.arq),
            ("arqv", user_arqv(o, &st, k), want.arqv),
            ("arr", arr_at_k(o, k), Some(want.arr)),
        ];
        for (name, g, w) in got {
            if !close_opt(g, w) {
                return Err(format!("user {} {name}: got {g:?}, oracle {w:?}", o.user_id));
            }
        }
    }

    let mut timings = TimingLog::default();
    for (i, t) in inst.timings.iter().enumerate() {
        timings.push(i.to_string(), *t);
    }
    let cfg = EvalConfig { k, repetitions: 5 };
    let report = evaluate(&obs, &st, &timings, &cfg, 0);
    let want = aggregate(inst);
    let pairs = [
        ("recall", report.recall_at_k, want.recall),
        ("ndcg", report.ndcg_at_k, want.ndcg),
        ("arp", report.arp, want.arp),
        ("arq", report.arq, want.arq),
        ("arqv", report.arqv, want.arqv),
        ("arr", report.arr, want.arr),
        ("art", report.art_seconds, want.art),
    ];
    for (name, g, w) in pairs {
        if !close(g, w) {
            return Err(format!("aggregate {name}: got {g}, oracle {w}"));
        }
    }
    Ok(())
}
