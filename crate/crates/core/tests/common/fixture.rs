//! Three-user dataset with canned chat replies and hand-derived metrics.
//!
//! Every user has six interactions, so the split keeps five as history and
//! holds out the sixth. Ratings are `i % 5 + 1` for item `i`.
//!
//! | user | history       | truth |
//! |------|---------------|-------|
//! | 1    | 1 2 3 4 5     | 6     |
//! | 2    | 2 3 4 5 7     | 8     |
//! | 3    | 1 3 5 7 9     | 2     |
//!
//! Popularity: 1:2 2:2 3:3 4:2 5:3 7:2 9:1, everything else 0.
//! Quality: 1:2 2:3 3:4 4:5 5:1 7:3 9:5, undefined elsewhere.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use super::stub::{self, Reply, Stub};

pub const K: usize = 3;
pub const T: usize = 3;
pub const UNIVERSE: u32 = 20;

pub const USERS: [(u32, [u32; 5], u32); 3] = [
    (1, [1, 2, 3, 4, 5], 6),
    (2, [2, 3, 4, 5, 7], 8),
    (3, [1, 3, 5, 7, 9], 2),
];

pub fn write_dataset(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let mut inter = String::new();
    for (user, history, truth) in USERS {
        for (ts, item) in history.iter().chain([truth].iter()).enumerate() {
            inter.push_str(&format!(
                "{{\"user\":{user},\"item\":{item},\"rating\":{}.0,\"ts\":{}}}\n",
                item % 5 + 1,
                1000 + ts
            ));
        }
    }
    std::fs::write(dir.join("interactions.jsonl"), inter).unwrap();
    let items: String = (1..=UNIVERSE)
        .map(|i| format!("{{\"item\":{i},\"attrs\":{{\"title\":\"Item {i}\",\"category\":\"Drama\"}}}}\n"))
        .collect();
    std::fs::write(dir.join("items.jsonl"), items).unwrap();
}

/// Replies per user, in request order. User 1 starts with a 429, user 2's
/// third run keeps failing with 500, user 3's first run returns no ids.
fn script(user: u32) -> Vec<Reply> {
    let rate_limited = Reply {
        status: 429,
        body: "{}".into(),
        retry_after: Some(0),
    };
    match user {
        1 => vec![
            rate_limited,
            Reply::chat("6,3,5"),
            Reply::chat("Sure: 3, 6, 99"),
            Reply::chat("1. 7\n2. 8\n3. 9"),
        ],
        2 => vec![Reply::chat("8,1,2"), Reply::chat("8,1,2")],
        3 => vec![
            Reply::chat("I cannot help with that."),
            Reply::chat("2"),
            Reply::chat("5,2,0"),
        ],
        _ => vec![],
    }
}

/// Canned server: each user's replies are consumed in order, after which
/// every request gets a 500.
pub fn canned_server() -> Stub {
    let calls: Mutex<HashMap<u32, usize>> = Mutex::new(HashMap::new());
    stub::serve(move |req, _| {
        let Some(user) = stub::user_of(&req.body) else {
            return Reply::status(400);
        };
        let mut calls = calls.lock().unwrap();
        let n = calls.entry(user).or_default();
        let mut replies = script(user);
        let reply = if *n < replies.len() {
            replies.swap_remove(*n)
        } else {
            Reply::status(500)
        };
        *n += 1;
        reply
    })
}

pub fn config(base_url: &str) -> String {
    format!(
        r#"output_dir = "run"

[dataset]
format = "normalized"
path = "data"
name = "Fixture"

[eval]
k = {K}
repetitions = {T}

[[models]]
kind = "llm"
name = "stub-llm"
base_url = "{base_url}"
max_retries = 1
initial_backoff_ms = 1

[[models]]
kind = "builtin"
name = "pop"
baseline = "popularity"
"#
    )
}

/// Successful, non-empty lists of the stub model per user, in run order.
pub fn stub_lists() -> Vec<(u32, u32, Vec<Vec<u32>>)> {
    vec![
        (1, 6, vec![vec![6, 3, 5], vec![3, 6], vec![7, 8, 9]]),
        (2, 8, vec![vec![8, 1, 2], vec![8, 1, 2]]),
        (3, 2, vec![vec![2], vec![5, 2]]),
    ]
}

pub fn popularity() -> HashMap<u32, u64> {
    [(1, 2), (2, 2), (3, 3), (4, 2), (5, 3), (7, 2), (9, 1)]
        .into_iter()
        .collect()
}

pub fn quality() -> HashMap<u32, f64> {
    [(1, 2.0), (2, 3.0), (3, 4.0), (4, 5.0), (5, 1.0), (7, 3.0), (9, 5.0)]
        .into_iter()
        .collect()
}

/// Hand-derived aggregates for the stub model.
pub mod expected {
    pub fn recall() -> f64 {
        8.0 / 9.0
    }
    pub fn ndcg() -> f64 {
        let r2 = 1.0 / 3f64.log2();
        ((1.0 + r2) / 3.0 + 1.0 + (1.0 + r2) / 2.0) / 3.0
    }
    pub const ARP: f64 = 61.0 / 36.0;
    pub const ARQ: f64 = 17.0 / 6.0;
    pub const ARQV: f64 = 11.0 / 18.0;
    pub const ARR: f64 = 16.0 / 27.0;
    pub const FAILURES: usize = 2;
    pub const EXECUTIONS: usize = 7;
    pub const HALLUCINATION_RATE: f64 = 2.0 / 19.0;
}
